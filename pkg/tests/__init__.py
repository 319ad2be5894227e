"""Unit tests for the multi-label meta-analysis toolkit"""
