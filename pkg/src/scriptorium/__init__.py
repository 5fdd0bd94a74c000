"""Toolkit for transcribing medieval Latin manuscript pages.

Subpackages and modules:

- ``corpus``    -- PageXML parsing/writing, dataset manifests, charsets, stats
- ``lineproc``  -- baseline-relative line extraction, normalization, augmentation
- ``nn``        -- minimal neural engine (conv/LSTM/CTC/AdamW) and the recognizer
- ``lm``        -- bigram Kneser-Ney language model with ARPA interop
- ``decode``    -- greedy and beam CTC decoding with LM shallow fusion
- ``evaluate``  -- CER/WER metrics and per-case reports
- ``correct``   -- LLM post-correction, direct transcription, and translation
- ``service``   -- HTTP review/processing API
- ``cli``       -- batch command line front-end
"""

__version__ = "0.1.0"
