"""
Request handlers behind the JSON endpoints
"""
