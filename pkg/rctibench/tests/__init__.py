"""Tests for rctibench."""
