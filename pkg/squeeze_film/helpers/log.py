"""
Functions for logging
"""

import json

import numpy as np


def non_json(input):
    """Handler for json_dumps when used for debugging."""
    if isinstance(input, np.ndarray):
        return input.tolist()
    if isinstance(input, np.generic):
        return input.item()
    return f"Non-JSON: ({input})"


def log_json(data):
    """Function for logging data as json."""
    return json.dumps(data, default=non_json)
