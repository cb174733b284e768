"""Tests for the wakesleep package."""
