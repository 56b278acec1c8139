import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'solmap_lab.settings')
django.setup()
