from django.db import models


class ExperimentRun(models.Model):
    class Source(models.TextChoices):
        SCENARIO = "scenario", "Scenario"
        SIMULATE = "simulate", "Simulate"
        ANALYZE = "analyze", "Analyze"

    name = models.CharField(
        "Run Name",
        max_length=100,
        help_text="Preset name or trial log file name, e.g. weihs",
    )
    source = models.CharField(
        "Source",
        max_length=10,
        choices=Source.choices,
        default=Source.SCENARIO,
    )
    seed = models.BigIntegerField("Seed", blank=True, null=True)
    trials = models.PositiveIntegerField("Trials")
    convention = models.CharField(
        "Null Convention",
        max_length=20,
        default="discard_nulls",
        help_text="strict, discard_nulls or null_as_minus",
    )
    s_value = models.FloatField("CHSH S")
    std_error = models.FloatField("Standard Error")
    sigma = models.FloatField("Sigma Above Local Bound", blank=True, null=True)
    p_value = models.FloatField("Martingale p-value", blank=True, null=True)
    epsilon = models.FloatField("Setting Bias Epsilon", default=0.0)
    reference = models.CharField(
        "Reference Value",
        max_length=40,
        blank=True,
        null=True,
        help_text="Published S ± se for presets, e.g. 2.73 ± 0.02",
    )
    audit_passed = models.BooleanField("Locality Audit Passed", blank=True, null=True)
    created_at = models.DateTimeField("Created At", auto_now_add=True)

    class Meta:
        verbose_name = "Experiment Run"
        verbose_name_plural = "Experiment Runs"
        ordering = ["-created_at", "-id"]
        indexes = [
            models.Index(fields=["name", "created_at"], name="domain_run_name_created_idx"),
        ]

    def __str__(self):
        return f"{self.name} S={self.s_value:.3f} ± {self.std_error:.3f}"
