"""Choi-matrix representations of channels, superchannels and combs."""

from .base import (
    A0,
    A0P,
    A1,
    A1P,
    B0,
    B0P,
    B1,
    B1P,
    CHANNEL_LABELS,
    SUPERCHANNEL_LABELS,
    BipartiteChannel,
    Channel,
    ChoiCarrier,
    Comb,
    Povm,
    Role,
    Superchannel,
)
from .channels import (
    apply_channel,
    channel_from_kraus,
    channel_gamma,
    channel_tensor,
    choi_from_kraus,
    choi_probe,
    compose,
    depolarizing_channel,
    identity_channel,
    is_channel,
    is_povm_channel,
    is_ppt,
    is_ppt_channel,
    isotropic_state,
    maximally_mixed_preparation,
    phi_plus,
    phi_plus_preparation,
    povm_channel,
    random_channel,
    random_general_channel,
    random_ppt_channel,
    random_ppt_general_channel,
    random_state,
    state_preparation,
    swap_channel,
)
from .combs import (
    comb_apply,
    comb_from_channels,
    comb_gamma,
    contract_comb,
    is_comb_valid,
    is_ppt_comb,
    random_ppt_comb,
    sequential_comb,
)
from .superchannels import (
    apply_superchannel,
    contract_superchannel,
    exact_cost_superchannel,
    identity_superchannel,
    input_swap_superchannel,
    is_ppt_superchannel,
    is_restricted_ppt,
    is_superchannel_valid,
    random_ppt_pre_post,
    random_ppt_superchannel,
    replacer_superchannel,
    superchannel_from_pre_post,
    superchannel_gamma,
    twirl,
)

__all__ = [
    'A0', 'B0', 'A1', 'B1', 'A0P', 'B0P', 'A1P', 'B1P',
    'CHANNEL_LABELS',
    'SUPERCHANNEL_LABELS',
    'Role',
    'ChoiCarrier',
    'Channel',
    'BipartiteChannel',
    'Superchannel',
    'Comb',
    'Povm',
    'apply_channel',
    'apply_superchannel',
    'channel_from_kraus',
    'channel_gamma',
    'channel_tensor',
    'choi_from_kraus',
    'choi_probe',
    'comb_apply',
    'comb_from_channels',
    'comb_gamma',
    'compose',
    'contract_comb',
    'contract_superchannel',
    'depolarizing_channel',
    'exact_cost_superchannel',
    'identity_channel',
    'identity_superchannel',
    'input_swap_superchannel',
    'is_channel',
    'is_comb_valid',
    'is_povm_channel',
    'is_ppt',
    'is_ppt_channel',
    'is_ppt_comb',
    'is_ppt_superchannel',
    'is_restricted_ppt',
    'is_superchannel_valid',
    'isotropic_state',
    'maximally_mixed_preparation',
    'phi_plus',
    'phi_plus_preparation',
    'povm_channel',
    'random_channel',
    'random_general_channel',
    'random_ppt_channel',
    'random_ppt_comb',
    'random_ppt_general_channel',
    'random_ppt_pre_post',
    'random_ppt_superchannel',
    'random_state',
    'replacer_superchannel',
    'sequential_comb',
    'state_preparation',
    'superchannel_from_pre_post',
    'superchannel_gamma',
    'swap_channel',
    'twirl',
]
