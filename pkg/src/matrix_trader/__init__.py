"""Matrix-state deep-RL trading lab.

A stock-trading MDP with scaled integer actions, a sliding 90-day feature
matrix observation, CNN and MLP Gaussian policies trained with PPO or A2C,
plus the data pipeline and evaluation metrics around them.
"""

__version__ = "0.1.0"

from matrix_trader.data.align import MarketDataset, align_and_fill, split
from matrix_trader.data.synthetic import generate_synthetic_market
from matrix_trader.env import EnvConfig, TradingEnv

__all__ = [
    "MarketDataset",
    "align_and_fill",
    "split",
    "generate_synthetic_market",
    "EnvConfig",
    "TradingEnv",
    "__version__",
]
