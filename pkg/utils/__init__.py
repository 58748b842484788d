# Palm vein pipeline modules
