"""vpal tests."""
