import sys

from capp_emu.cli import main

sys.exit(main())
