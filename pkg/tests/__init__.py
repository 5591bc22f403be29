"""
Empty __init__.py to make tests a package
"""
