"""Tests for scribble-seg."""
