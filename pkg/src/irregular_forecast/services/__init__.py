"""Service layer implementing the workflow stages."""
