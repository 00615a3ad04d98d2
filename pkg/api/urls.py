from django.urls import path

from .views import AnalyzeView, AuditView, BoundView, ChshView, PresetsView, RunsView, SimulateView

urlpatterns = [
    path("presets/", PresetsView.as_view(), name="presets"),
    path("chsh/", ChshView.as_view(), name="chsh"),
    path("bound/", BoundView.as_view(), name="bound"),
    path("audit/", AuditView.as_view(), name="audit"),
    path("analyze/", AnalyzeView.as_view(), name="analyze"),
    path("simulate/", SimulateView.as_view(), name="simulate"),
    path("runs/", RunsView.as_view(), name="runs"),
]
