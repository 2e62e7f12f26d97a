import sys
from pathlib import Path

# Make `app` importable when pytest runs from the repo root or from backend/.
sys.path.insert(0, str(Path(__file__).resolve().parent))
