# Copyright 2026 The Translit Authors. All Rights Reserved.
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

"""Python bindings for the transliteration toolkit."""

from ._translit import (
    FormatError,
    IoError,
    PreconditionError,
    Vocabulary,
    __version__,
    audit,
    bleu,
    build_split,
    char_bleu,
    chrf,
    evaluate_metrics,
    generate_synthetic,
    learning_rate,
    mask_tokens,
    normalize,
    render_report,
    run_cli,
    transliterate,
)

__all__ = [
    "FormatError",
    "IoError",
    "PreconditionError",
    "Vocabulary",
    "__version__",
    "audit",
    "bleu",
    "build_split",
    "char_bleu",
    "chrf",
    "evaluate_metrics",
    "generate_synthetic",
    "learning_rate",
    "mask_tokens",
    "normalize",
    "render_report",
    "run_cli",
    "transliterate",
]
