from .app import create_app, classes_report

__all__ = ["create_app", "classes_report"]
