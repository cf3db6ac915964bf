"""Ingestion of weekly claims and search signals."""
