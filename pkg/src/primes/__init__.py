"""Package initialization for primes"""
