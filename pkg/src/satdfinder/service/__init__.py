"""HTTP review service wrapping the review loop with durable sessions."""
