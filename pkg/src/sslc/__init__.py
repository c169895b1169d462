"""Stateless superlight client: verifiable map-reduce queries over a ledger."""

__version__ = "0.1.0"
