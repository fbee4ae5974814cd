"""ddip-otfs-lab: OTFS link simulation with MMSE, MMSE-BPIC and D-DIP-BPIC detectors."""

from __future__ import annotations

import os
from pathlib import Path

from dotenv import load_dotenv
from platformdirs import user_config_dir

__version__ = "0.1.0"

global_config_dir = Path(os.getenv("DDIPOTFS_GLOBAL_CONFIG_DIR") or user_config_dir("ddip-otfs"))
global_config_file = global_config_dir / ".env"

load_dotenv(dotenv_path=global_config_file, override=False)

__all__ = ["__version__", "global_config_dir", "global_config_file"]
