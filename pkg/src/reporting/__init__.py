"""Report writers for experiment tables, summaries and manifests."""
