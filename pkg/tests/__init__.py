"""Tests for nscrit."""
