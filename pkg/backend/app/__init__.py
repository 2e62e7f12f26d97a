"""Layer-potential regularity toolkit."""
