import hypothesis

hypothesis.settings.register_profile(
    "kltrace", derandomize=True, max_examples=60, deadline=None
)
hypothesis.settings.load_profile("kltrace")
