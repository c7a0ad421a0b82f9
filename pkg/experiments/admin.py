from django.contrib import admin
from .models import IdentityCheck, NormRecord, Run


class NormRecordInline(admin.TabularInline):
    model = NormRecord
    extra = 0
    fields = ('level', 'k', 'l', 'N', 'n_cells', 'epsilon', 'L2L2', 'LinfL2', 'L2H1', 'status')
    readonly_fields = fields


class IdentityCheckInline(admin.TabularInline):
    model = IdentityCheck
    extra = 0
    fields = ('name', 'residual', 'threshold', 'outcome')
    readonly_fields = fields


class RunAdmin(admin.ModelAdmin):
    list_display = ('run_id', 'command', 'status', 'config_hash', 'created_at')
    list_filter = ('command', 'status', 'created_at')
    search_fields = ('run_id', 'config_hash')
    readonly_fields = ('created_at', 'updated_at')
    fieldsets = (
        ('Run', {
            'fields': ('run_id', 'command', 'status', 'config_hash', 'output_dir')
        }),
        ('Payload', {
            'fields': ('config', 'summary', 'error')
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at'),
            'classes': ('collapse',)
        }),
    )
    inlines = [NormRecordInline, IdentityCheckInline]


admin.site.register(Run, RunAdmin)
admin.site.register(NormRecord)
admin.site.register(IdentityCheck)
