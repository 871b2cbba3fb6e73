"""Command-line harness: configuration, run orchestration and verification checks."""
