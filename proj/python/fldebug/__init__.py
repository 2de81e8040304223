# Copyright 2026 The fldebug Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Federated learning replay debugger."""

import json

from ._core import Api as _Api
from ._core import FldebugError, Store, fedavg, run_scenario
from ._core import localize as _localize

__all__ = ["Api", "FldebugError", "Store", "fedavg", "localize", "run_scenario"]


def localize(store, round, kappa=10, eta=None, threshold=0.003, seed=0):
    """Localizes the faulty client of a recorded round."""
    return json.loads(_localize(store, round, kappa, eta, threshold, seed))


class Api:
    """The HTTP API route table, called in-process."""

    def __init__(self, telemetry_dir):
        self._api = _Api(str(telemetry_dir))

    def request(self, method, target, body=None):
        text = "" if body is None else json.dumps(body)
        status, reply = self._api.request(method, target, text)
        return status, json.loads(reply)

    def get(self, target):
        return self.request("GET", target)

    def post(self, target, body=None):
        return self.request("POST", target, body)
