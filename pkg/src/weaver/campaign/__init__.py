from .executor import EngineConfig, EngineUnavailable, Outcome, OutcomeKind, classify, execute
from .feedback import CoverageFileFeedback, FeedbackSource, MissingCoverageDump, StructuralFeedback, structural_features
from .loop import Campaign, CampaignConfig, fuzz_loop, load_corpus, program_hash, run_campaign

__all__ = ["EngineConfig", "EngineUnavailable", "Outcome", "OutcomeKind", "classify", "execute",
           "CoverageFileFeedback", "FeedbackSource", "MissingCoverageDump", "StructuralFeedback",
           "structural_features", "Campaign", "CampaignConfig", "fuzz_loop", "load_corpus", "program_hash",
           "run_campaign"]
