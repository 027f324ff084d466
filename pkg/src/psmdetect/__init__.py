"""Feature-driven detection of pathogenic social-media accounts.

The pipeline turns a tweet/profile/URL corpus into a fixed 111-dimensional
per-user representation (causality over viral cascades, profile fields,
URL/source statistics, topic mixtures, text credibility scores, tweet
aggregates) and evaluates in-repo classifiers under stratified tenfold
cross-validation.
"""

__version__ = "0.1.0"
