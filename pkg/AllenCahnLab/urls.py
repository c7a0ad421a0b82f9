"""
URL configuration for AllenCahnLab project.

Runs, their norm tables and identity checks are exposed read-only under
``/api/``; everything is produced by the management commands.
"""
from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/', include('api.urls')),
]
