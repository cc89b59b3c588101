"""ISAC signal-set design: max-min distance signal sets that stay close to a
reference sensing waveform, with evaluation tools and a command-line front end."""

__version__ = "0.1.0"
