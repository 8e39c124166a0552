"""ehbalanced tests."""
