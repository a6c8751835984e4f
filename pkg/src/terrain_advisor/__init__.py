"""Cost-aware grid path planning with an LLM advisor post-processor."""
