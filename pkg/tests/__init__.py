"""Tests for Ollama Agent CLI"""
