"""Integration tests for document extraction and Neo4j export."""
