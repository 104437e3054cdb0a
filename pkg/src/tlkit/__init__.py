"""Tester-learner pairs for agnostic learning under checked distributional assumptions."""
