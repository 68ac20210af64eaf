# Citation prediction pipeline modules
