"""Search-volume preprocessing, forecasting and simulation toolkit."""
