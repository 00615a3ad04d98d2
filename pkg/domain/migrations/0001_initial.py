# Generated by Django 5.2.6 on 2026-10-19

from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                (
                    "name",
                    models.CharField(
                        help_text="Preset name or trial log file name, e.g. weihs",
                        max_length=100,
                        verbose_name="Run Name",
                    ),
                ),
                (
                    "source",
                    models.CharField(
                        choices=[("scenario", "Scenario"), ("simulate", "Simulate"), ("analyze", "Analyze")],
                        default="scenario",
                        max_length=10,
                        verbose_name="Source",
                    ),
                ),
                ("seed", models.BigIntegerField(blank=True, null=True, verbose_name="Seed")),
                ("trials", models.PositiveIntegerField(verbose_name="Trials")),
                (
                    "convention",
                    models.CharField(
                        default="discard_nulls",
                        help_text="strict, discard_nulls or null_as_minus",
                        max_length=20,
                        verbose_name="Null Convention",
                    ),
                ),
                ("s_value", models.FloatField(verbose_name="CHSH S")),
                ("std_error", models.FloatField(verbose_name="Standard Error")),
                ("sigma", models.FloatField(blank=True, null=True, verbose_name="Sigma Above Local Bound")),
                ("p_value", models.FloatField(blank=True, null=True, verbose_name="Martingale p-value")),
                ("epsilon", models.FloatField(default=0.0, verbose_name="Setting Bias Epsilon")),
                (
                    "reference",
                    models.CharField(
                        blank=True,
                        help_text="Published S ± se for presets, e.g. 2.73 ± 0.02",
                        max_length=40,
                        null=True,
                        verbose_name="Reference Value",
                    ),
                ),
                ("audit_passed", models.BooleanField(blank=True, null=True, verbose_name="Locality Audit Passed")),
                ("created_at", models.DateTimeField(auto_now_add=True, verbose_name="Created At")),
            ],
            options={
                "verbose_name": "Experiment Run",
                "verbose_name_plural": "Experiment Runs",
                "ordering": ["-created_at", "-id"],
                "indexes": [models.Index(fields=["name", "created_at"], name="domain_run_name_created_idx")],
            },
        ),
    ]
