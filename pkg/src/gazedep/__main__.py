import sys

from gazedep.cli import main

sys.exit(main())
