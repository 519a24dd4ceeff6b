# Copyright 2026 The ged Authors.
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

"""Single-step latent edge prediction with granularity control."""

from ged._core import (
    EdgePrediction,
    EvalResult,
    IoError,
    MatchConfig,
    Model,
    NumericError,
    UNetConfig,
    ValidationError,
    compute_granularities,
    correspond_pixels,
    embed_caption,
    encode_edge,
    encode_image,
    evaluate,
    generate_synthetic_corpus,
    nms_thin,
    prediction_filename,
    render_synthetic_image,
    sweep_grid,
)

__all__ = [
    "EdgePrediction",
    "EvalResult",
    "IoError",
    "MatchConfig",
    "Model",
    "NumericError",
    "UNetConfig",
    "ValidationError",
    "compute_granularities",
    "correspond_pixels",
    "embed_caption",
    "encode_edge",
    "encode_image",
    "evaluate",
    "generate_synthetic_corpus",
    "nms_thin",
    "prediction_filename",
    "render_synthetic_image",
    "sweep_grid",
]
