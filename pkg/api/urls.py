from django.urls import path
from .views import ProblemListView, RunDetailView, RunListView

urlpatterns = [
    path("problems", ProblemListView.as_view(), name="problems"),
    path("runs", RunListView.as_view(), name="runs"),
    path("runs/<str:run_id>", RunDetailView.as_view(), name="run-detail"),
]
