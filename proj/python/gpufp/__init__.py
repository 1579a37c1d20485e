# Copyright 2026 The gpufp Authors
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

"""Simulated GPU fingerprinting: re-identification, challenge protocol and
latency-based location checks."""

from ._core import (  # noqa: F401
    PROTOCOL_VERSION,
    DecodeError,
    DeviceProfile,
    Error,
    Fingerprint,
    MatchResult,
    Seed,
    SimParams,
    TimingPolicy,
    bound_distance,
    clopper_pearson,
    create_device,
    decode_challenge,
    decode_response,
    encode_challenge,
    encode_response,
    evaluate,
    feasible_region,
    l1_distance,
    reidentify,
    reidentify_paired,
    run_builtin_scenario,
    run_fingerprint,
    scenario_names,
)

__version__ = "0.1.0"
