"""Benchmark and verification driver behind the ``adaprelora`` command."""
