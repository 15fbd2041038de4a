"""
Модуль условного вариационного автокодировщика с генератором на основе CRPS.
"""
from cvae.conditioning import ConditionBatch, conditioning_channels, time_features
from cvae.model import CVAEModel, DeterministicEstimate, GaussianParams, LatentSample, LatentSource, reparameterize
