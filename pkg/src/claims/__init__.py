"""Package initialization for claims"""
