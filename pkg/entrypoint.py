import os
import sys

# Ajouter le répertoire courant au chemin Python
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from app.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
