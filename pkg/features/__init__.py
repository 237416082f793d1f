# This file makes the features directory a Python package
