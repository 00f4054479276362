"""Drift-adaptive event detection from social streams.

Subsystems: a keyed staging store with ack semantics (`staging`), file and
synthetic streamers (`ingest`, `synth`), rule-based event confirmation over
high-confidence sensor records (`events`), gazetteer and grid-cell location
resolution (`locations`), join-based auto-labeling (`joins`), continuously
retrained linear filter ensembles with margin-density drift detection
(`filters`), and the windowed pipeline orchestrator (`pipeline`).
"""

__version__ = "0.1.0"
