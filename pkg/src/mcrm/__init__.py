"""Multiobjective cubic regularization with exact, inexact and finite-difference derivatives."""
