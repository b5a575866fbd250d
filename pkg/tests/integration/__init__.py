"""
Integration Tests

This directory contains comprehensive integration tests that simulate real frontend user interactions.
"""
