from django.shortcuts import get_object_or_404
from rest_framework import permissions
from rest_framework.response import Response
from rest_framework.views import APIView

from experiments.models import Run
from spacetime.problems import REGISTRY
from .serializers import RunDetailSerializer, RunSerializer


def _positive_int(value, default):
    try:
        number = int(value)
    except (TypeError, ValueError):
        return default
    return number if number > 0 else default


class ProblemListView(APIView):
    permission_classes = [permissions.IsAuthenticated]

    def get(self, request):
        dimension = request.query_params.get("dimension")
        entries = [entry.to_dict() for entry in REGISTRY.values()]
        if dimension:
            entries = [e for e in entries if _positive_int(dimension, 0) in e["dimensions"]]
        return Response({"results": entries})


class RunListView(APIView):
    permission_classes = [permissions.IsAuthenticated]

    def get(self, request):
        page = _positive_int(request.query_params.get("page"), 1)
        page_size = _positive_int(request.query_params.get("page_size"), 10)

        qs = Run.objects.all()
        command = request.query_params.get("command")
        if command:
            qs = qs.filter(command=command)
        run_status = request.query_params.get("status")
        if run_status:
            qs = qs.filter(status=run_status)
        config_hash = request.query_params.get("config_hash")
        if config_hash:
            qs = qs.filter(config_hash=config_hash)

        total = qs.count()
        start = (page - 1) * page_size
        end = start + page_size
        serializer = RunSerializer(qs[start:end], many=True)
        return Response({
            "results": serializer.data,
            "page": page,
            "page_size": page_size,
            "count": total,
            "total_pages": (total + page_size - 1) // page_size,
        })


class RunDetailView(APIView):
    permission_classes = [permissions.IsAuthenticated]

    def get(self, request, run_id):
        run = get_object_or_404(
            Run.objects.prefetch_related("norm_records", "identity_checks"), run_id=run_id
        )
        return Response(RunDetailSerializer(run).data)
