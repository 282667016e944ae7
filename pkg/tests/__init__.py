"""Tests for meanvar-eprocess."""
