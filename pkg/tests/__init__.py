"""Tests for ksymp."""
