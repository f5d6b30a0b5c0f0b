"""riskseq: time-decayed, emotion-fused recurrent risk classification."""

__version__ = "0.1.0"
