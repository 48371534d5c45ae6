"""Package initialization for report"""
