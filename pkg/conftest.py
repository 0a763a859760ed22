import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "dglab.settings")
django.setup()
