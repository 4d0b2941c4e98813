"""
Utils package for helper functions
"""

from .helpers import (
    sanitize_filename,
    save_matrix_csv,
    load_matrix_csv,
    write_rows_csv,
    write_json,
    calculate_processing_time,
)

__all__ = [
    'sanitize_filename',
    'save_matrix_csv',
    'load_matrix_csv',
    'write_rows_csv',
    'write_json',
    'calculate_processing_time',
]
