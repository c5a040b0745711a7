"""Ribbon-based biharmonic surface patches over triangulated planar domains."""
