"""Package initialization for src"""
