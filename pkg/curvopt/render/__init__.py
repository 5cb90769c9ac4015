"""Report, CSV and summary output."""
