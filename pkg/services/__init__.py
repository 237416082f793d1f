"""
Services package: pipeline commands and the image cache.
"""
