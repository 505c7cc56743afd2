"""
Utility functions for the verification suite
"""
import json
import logging
import os
from datetime import datetime

import numpy as np
from dotenv import dotenv_values

from config import LOG_FILE, LOG_LEVEL
from errors import ConfigError

logger = logging.getLogger(__name__)


def setup_logging():
    """Setup logging configuration"""
    log_dir = os.path.dirname(LOG_FILE)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=LOG_LEVEL,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(LOG_FILE, encoding='utf-8'),
            logging.StreamHandler()
        ]
    )


def get_timestamp():
    """Get current timestamp"""
    return datetime.now().strftime("%Y-%m-%d %H:%M:%S")


def banner(title):
    """Log a section banner"""
    logger.info(f"{'='*80}")
    logger.info(title)
    logger.info(f"{'='*80}")


def _to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def dumps_report(data):
    """Serialize a report dict deterministically"""
    return json.dumps(_to_jsonable(data), indent=2, sort_keys=True)


def write_json(data, path):
    """
    Write a JSON document, creating the parent directory
    Args:
        data: JSON-able structure (numpy values are converted)
        path: Output file path
    """
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(dumps_report(data))
    logger.info(f"✓ Wrote {path}")


def _key_lines(path):
    """Map each key of a key-value file to its line number"""
    lines = {}
    with open(path, 'r', encoding='utf-8') as f:
        for number, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            if line.startswith('export '):
                line = line[len('export '):]
            if '=' not in line:
                raise ConfigError(f"{path}:{number}: expected 'key = value', got {raw.rstrip()!r}")
            key = line.split('=', 1)[0].strip()
            lines[key] = number
    return lines


def read_config_file(path):
    """
    Read a flat key-value config file (dotenv grammar) or a JSON object
    Args:
        path: Config file path; '.json' files are parsed as JSON
    Returns:
        tuple: (dict of raw values, dict of key -> line number)
    """
    if not os.path.exists(path):
        raise ConfigError(f"{path}: config file not found")

    if path.lower().endswith('.json'):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}:1: top-level JSON value must be an object")
        return data, {key: 0 for key in data}

    lines = _key_lines(path)
    values = dict(dotenv_values(path))
    return values, lines


def parse_float_list(text, sep=','):
    """Parse '1, 2, 3' into a list of floats"""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(sep) if x.strip()]
