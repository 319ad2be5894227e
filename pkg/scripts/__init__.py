"""Command-line scripts for the meta-analysis toolkit"""
