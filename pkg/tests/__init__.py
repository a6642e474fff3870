"""Tests for presto."""
