# Generated by Django 5.2.8 on 2026-10-18 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Run',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('run_id', models.CharField(db_index=True, max_length=100, unique=True)),
                ('command', models.CharField(choices=[('solve', 'Solve'), ('convergence', 'Convergence'), ('stability_sweep', 'Stability sweep'), ('verify', 'Verify'), ('spectrum', 'Spectrum')], max_length=20)),
                ('status', models.CharField(choices=[('running', 'Running'), ('succeeded', 'Succeeded'), ('failed', 'Failed')], default='running', max_length=20)),
                ('config', models.JSONField()),
                ('config_hash', models.CharField(db_index=True, max_length=16)),
                ('output_dir', models.CharField(max_length=500)),
                ('summary', models.JSONField(blank=True, null=True)),
                ('error', models.JSONField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='NormRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('level', models.PositiveIntegerField(default=0)),
                ('k', models.PositiveIntegerField()),
                ('l', models.PositiveIntegerField()),
                ('N', models.PositiveIntegerField()),
                ('n_cells', models.PositiveIntegerField()),
                ('h', models.FloatField()),
                ('tau', models.FloatField()),
                ('epsilon', models.FloatField()),
                ('L2L2', models.FloatField(null=True)),
                ('LinfL2', models.FloatField(null=True)),
                ('L2H1', models.FloatField(null=True)),
                ('L4L4', models.FloatField(null=True)),
                ('L4L2', models.FloatField(null=True)),
                ('jump_sum', models.FloatField(null=True)),
                ('status', models.CharField(choices=[('ok', 'OK'), ('failed', 'Failed')], default='ok', max_length=10)),
                ('message', models.TextField(blank=True, default='')),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='norm_records', to='experiments.run')),
            ],
            options={
                'ordering': ['run', 'level', '-epsilon'],
            },
        ),
        migrations.CreateModel(
            name='IdentityCheck',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('name', models.CharField(max_length=100)),
                ('lhs', models.FloatField(null=True)),
                ('rhs', models.FloatField(null=True)),
                ('residual', models.FloatField(null=True)),
                ('threshold', models.FloatField(null=True)),
                ('outcome', models.CharField(choices=[('passed', 'Passed'), ('failed', 'Failed'), ('skipped', 'Skipped')], max_length=10)),
                ('detail', models.JSONField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='identity_checks', to='experiments.run')),
            ],
            options={
                'ordering': ['run', 'id'],
            },
        ),
    ]
